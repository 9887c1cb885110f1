import sys

from spfh.app.cli import main

if __name__ == "__main__":
    sys.exit(main())
