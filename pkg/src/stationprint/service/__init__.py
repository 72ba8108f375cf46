"""Pipeline wiring: configuration, mock stream server, batch runner, HTTP API."""
