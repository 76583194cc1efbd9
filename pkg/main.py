"""
main.py | mfkit entry point
--------------------------------------------------------------------
Top-level orchestrator: `python3 main.py <command> [flags]`.

Core flow:
1. Parse the command line and merge config file / flags
2. Load and regularize prices, build returns
3. Run the requested analysis stage
4. Write config.echo, CSV tables and summary.txt
"""

import sys

from mfkit.cli import main

if __name__ == "__main__":
    sys.exit(main())
