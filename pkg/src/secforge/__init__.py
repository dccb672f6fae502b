"""secforge: forge, select, and report CWE-targeted preference datasets."""

__version__ = "0.1.0"
