"""Offline APRS ground station for high-altitude balloon chase teams.

Receive chain: Bell 202 AFSK audio -> AX.25 frames -> APRS reports.
Chase-side: NMEA GPS fixes, antenna pointing solutions, live tracking
state served over HTTP/WebSocket, and a flight simulator for desk testing.
"""

__version__ = "0.1.0"
