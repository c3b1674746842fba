"""Gateway-side visibility and blocking of IoT tracker traffic.

The package turns captured gateway traffic into per-device telemetry
(which domains each device contacts, how often, how much it sends),
labels contacted domains against compiled tracking filter lists, and
enforces user block decisions through a small UDP DNS sinkhole.  An
HTTP API exposes the telemetry and a live event stream for the web
dashboard.
"""

__version__ = "0.1.0"
