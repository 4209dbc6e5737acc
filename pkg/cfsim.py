#!/usr/bin/env python3
import sys

from cfsim.cli import CommandLine

if __name__ == "__main__":
    b = CommandLine()
    sys.exit(b.run())
