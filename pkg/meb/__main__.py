import sys

from meb.cli.main import main

sys.exit(main())
