import sys

from pursuit_lab.cli import main

sys.exit(main())
