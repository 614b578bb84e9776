# -*- coding: utf-8 -*-

"""The salsr CLI."""

from .cli import main

if __name__ == "__main__":
    main()
