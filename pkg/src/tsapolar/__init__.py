"""Time-shifted alternating Gelfand-Pinsker polar coding for two-receiver
broadcast channels.

Modules
-------
prob      finite-alphabet distributions and information measures
regions   Marton region evaluation, corner points, TSA rate line
channel   Blackwell and generic broadcast channels
polar     polar transform, reliability profiling, code construction
coder     shaping / GP encoder, SC and SCL decoders
scheme    TSA block layout, stream coding, time-sharing baseline
oracle    tiny-n random-coding oracle
simcli    command-line simulator
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
