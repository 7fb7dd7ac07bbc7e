"""
Two-process delegation: framed protocol, evaluation server and client.
"""
