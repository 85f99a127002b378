import sys

from quantsig.cli import main

sys.exit(main())
