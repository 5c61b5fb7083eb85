"""Reproduction scripts.

Each script is runnable as a module from the repository root::

    uv run python -m scripts.acceptance

and prints one ``[tag] ok`` / ``[tag] FAILED`` line per check.  They use
only the public functions of ``app`` and the configs under ``configs/``.
"""
