"""
Test package for the MapReduce engine.
"""

import logging

logging.getLogger('mrloglab.engine').setLevel(logging.ERROR)
logging.getLogger('mrloglab.blockstore').setLevel(logging.ERROR)
