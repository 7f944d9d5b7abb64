import sys
from .evalcli.cli import main

sys.exit(main())
