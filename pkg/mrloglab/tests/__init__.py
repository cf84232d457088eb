"""
Test package for mrloglab.
"""

import logging

# Keep test output quiet: failure injection and re-scheduling log warnings
logging.getLogger('mrloglab').setLevel(logging.ERROR)

for name in logging.root.manager.loggerDict:
    if name.startswith('mrloglab.'):
        logging.getLogger(name).setLevel(logging.ERROR)
