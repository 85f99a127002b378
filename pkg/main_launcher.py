#!/usr/bin/env python3
"""
quantsig - Pipeline Launcher
============================

Entry point for the quantsig stock prediction pipeline. Validates the
runtime environment, configures logging and hands the command line to
quantsig.cli.
"""

import sys
import logging
from pathlib import Path
from typing import List, Optional, Sequence

# Configure project root and import paths
PROJECT_ROOT_DIRECTORY = Path(__file__).parent.absolute()
sys.path.insert(0, str(PROJECT_ROOT_DIRECTORY))

from quantsig import __version__
from quantsig import cli
from quantsig.errors import ConfigError


class QuantSigLauncher:
    """
    Launcher wrapping the quantsig command line.

    Responsibilities:
    - Validate Python version and numerical dependencies
    - Configure logging once for the whole process
    - Dispatch to the requested subcommand and return its exit code
    """

    REQUIRED_MODULES = ('numpy', 'scipy', 'pandas', 'requests', 'dotenv')

    def __init__(self, argv: Optional[Sequence[str]] = None) -> None:
        self.applicationName = "quantsig"
        self.applicationVersion = __version__
        self.argv: List[str] = list(sys.argv[1:] if argv is None else argv)
        self._configureApplicationLogging()

    def _configureApplicationLogging(self) -> None:
        """Configure logging from --verbose / --log-file before the CLI parses anything else."""
        verbose = '-v' in self.argv or '--verbose' in self.argv
        logFile = None
        for position, argument in enumerate(self.argv):
            if argument == '--log-file' and position + 1 < len(self.argv):
                logFile = self.argv[position + 1]
            elif argument.startswith('--log-file='):
                logFile = argument.split('=', 1)[1]
        try:
            cli.configure_logging(verbose, logFile)
        except ConfigError as loggingError:
            print(f"⚠️  Warning: Could not open log file: {loggingError}", file=sys.stderr)
            cli.configure_logging(verbose, None)
        self.applicationLogger = logging.getLogger(self.applicationName)
        self.applicationLogger.debug(f"Starting {self.applicationName} v{self.applicationVersion}")

    def validateSystemRequirements(self) -> bool:
        """
        Validate system requirements and dependencies.

        Returns:
            bool: True if all requirements are met
        """
        if sys.version_info < (3, 8):
            self.applicationLogger.error("❌ Python 3.8+ required")
            return False

        missingModules = []
        for moduleName in self.REQUIRED_MODULES:
            try:
                __import__(moduleName)
            except ImportError:
                missingModules.append(moduleName)
        if missingModules:
            self.applicationLogger.error(f"❌ Missing required modules: {missingModules}")
            return False
        return True

    def run(self) -> int:
        if not self.validateSystemRequirements():
            return 1
        exitCode = cli.main(self.argv)
        if exitCode:
            self.applicationLogger.debug(f"{self.applicationName} exited with code {exitCode}")
        return exitCode


def main() -> int:
    return QuantSigLauncher().run()


if __name__ == "__main__":
    sys.exit(main())
