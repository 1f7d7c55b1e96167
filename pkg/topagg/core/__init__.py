"""
Core functionality: gradient types, clipping, seeded streams, dump formats, configuration and output files.
"""
