"""Operational shell: configuration, persistent decision log, HTTP/WS
service for the operator console, and the command-line entry points."""
