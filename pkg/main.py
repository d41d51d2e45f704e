# !/usr/bin/env python
"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

import sys

from dotenv import load_dotenv

from twisted_eigen.cli import main

load_dotenv()


if __name__ == "__main__":
    sys.exit(main())
