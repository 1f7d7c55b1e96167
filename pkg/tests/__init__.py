"""
Tests package for topagg.
"""
