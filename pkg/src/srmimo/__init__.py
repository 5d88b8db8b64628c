"""stub during bring-up"""
__version__ = "0.1.0"
