"""Intentionally buggy target modules with recorded reference tracebacks.

Each entry under ``targets/`` bundles a module, a manifest describing its
invokable surface and documented trigger, and the traceback the trigger
produces. The verifier replays every trigger in the live runtime and diffs
the result against the stored reference.
"""

__version__ = "0.1.0"
