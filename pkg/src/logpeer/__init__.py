"""Logical peering: trust logic, secure routing with path control, and a simulated dataplane."""
