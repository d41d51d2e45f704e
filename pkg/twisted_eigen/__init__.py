"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

__version__ = "0.2.0"
