"""Test package for Builder MCP."""
