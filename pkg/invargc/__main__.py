"""
Allow `python -m invargc`
"""

import sys

from invargc.main import main

if __name__ == "__main__":
    sys.exit(main())
