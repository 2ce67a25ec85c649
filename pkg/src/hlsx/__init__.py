"""Legal high-level state extraction from a synthesizable VHDL subset."""

__version__ = "0.1.0"
