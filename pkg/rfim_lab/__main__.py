import sys

from rfim_lab.cli import main

sys.exit(main())
