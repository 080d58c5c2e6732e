import sys

from regimecast.cli import main

if __name__ == "__main__":
    sys.exit(main())
