import sys

from koopman_sill.cli import main

sys.exit(main())
