# -*- coding: utf-8 -*-

"""Tests for :mod:`salsr`."""
