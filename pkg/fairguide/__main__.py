"""Main entry point for FairGuide."""

from .cli import cli

if __name__ == '__main__':
    cli()
