import sys

from deskbms.cli import main

if __name__ == "__main__":
    # no arguments opens the desktop runner
    sys.exit(main(sys.argv[1:] or ["gui"]))
