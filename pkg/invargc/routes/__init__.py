"""
Command handlers package
"""
