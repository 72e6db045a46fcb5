"""
Services package
"""

