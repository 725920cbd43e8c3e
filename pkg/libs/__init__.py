"""
Initializes the libs package: solvers for the LWR traffic model on networks
of T-junctions, with the path fractions each road carries, and the trace
experiments built on them.
"""

# Written as the first line of every CSV artifact.
SCHEMA_VERSION = "lwrnet-csv/1"
