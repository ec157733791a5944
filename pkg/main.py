"""
Minimum-power spike-timing stimulus designer.
Main entry point for the command-line application.
"""
import sys
from pathlib import Path

from src.ui.cli import main as cli_main


def main() -> int:
    """Main application entry point."""
    portable_root = Path(__file__).parent.resolve()
    settings = portable_root / "config" / "settings.json"
    return cli_main(sys.argv[1:], default_config=settings if settings.exists() else None)


if __name__ == "__main__":
    sys.exit(main())
