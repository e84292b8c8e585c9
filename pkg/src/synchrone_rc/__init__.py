"""Toolchain for a synchronous cooperative language with resource control:
front end, reference interpreter, static analyses, bytecode compiler,
virtual machine and bytecode verifier."""

__version__ = "0.1.0"
