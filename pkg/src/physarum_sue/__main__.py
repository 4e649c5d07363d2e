from physarum_sue.cli import main
import sys
sys.exit(main())
