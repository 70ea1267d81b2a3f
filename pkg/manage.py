#!/usr/bin/env python
"""
Laboratory entry point:

    python manage.py spectrum --config run.json --out results/
    python manage.py flow --config flow.json --out results/ --threads 4
    python manage.py index [--config index.json] --out results/
    python manage.py verify [--group flow] [--seed N]
"""
import os
import sys


def main():
    """Run a laboratory command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
