import sys

from src.rtos_verifier.main import main

if __name__ == "__main__":
    sys.exit(main())
