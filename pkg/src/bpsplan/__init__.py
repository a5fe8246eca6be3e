"""Planning toolkit for clean hybrid backup power systems.

Builds scenario-weighted two-stage stochastic linear programs that size and
dispatch standalone backup power systems (generators, fuel cells, primary
and secondary batteries, solar PV) over representative outage periods, and
runs the study suite on top of them: decarbonization frontiers, emergency
fuel purchases, demand flexibility, and solar pro-rata accounting.
"""

__version__ = "0.1.0"
