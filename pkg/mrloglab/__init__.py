"""
Log analysis on a small, embedded MapReduce engine.

This package contains:

1. A log format layer that detects and parses web server logs
   - IIS W3C extended, Apache access and error logs, Squid native logs

2. A simulated block store with replicas spread over virtual nodes
   - Node failures can be injected to exercise re-scheduling

3. A MapReduce engine with a sorting shuffle, multi-output routing,
   job chaining and an in-memory cached dataset mode

4. Ready-made analyses, a command line front end and a benchmark harness

See the README.md file for more information on how to use it.
"""

__version__ = "0.1.0"
