import sys

from billiard_security.cli import main

if __name__ == "__main__":
    sys.exit(main())
