"""Search-based crash reproduction from stack traces.

Given a crash stack trace and a description of the API under test, a guided
genetic algorithm evolves call-sequence test cases until one reproduces the
crash (fitness exactly 0), with an experiment harness that measures
reproduction rates over repeated seeded runs.
"""

__version__ = "0.1.0"
