"""``python -m cli`` entry point."""

from cli.commands import cli

if __name__ == '__main__':
    cli()
