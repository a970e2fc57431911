"""Digital procurement workspace.

Pulls siloed procurement data (orders, RfQs, supplier master, emission
factors, news) into one consistent store and layers a news feed, volume
analytics, staged CO2e scoring, and approval-gated automation bots on top.
Served over a JSON HTTP API and an admin CLI.
"""

__version__ = "0.1.0"
