#!/usr/bin/env python
"""Entry point for the k-fault experiment commands, e.g. ``manage.py analyze_fn --kind nand --out nand.json``."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'kfault_lab.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError("Django is required: pip install -r requirements.txt") from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
