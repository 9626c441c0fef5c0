"""Command-and-control: wire formats and the WebSocket gateway."""
