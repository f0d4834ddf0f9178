"""
Runner helpers: configuration, report emission and figures
"""
