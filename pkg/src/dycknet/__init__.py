"""Compile automata into exact RNN/GRU weights and simulate them."""
__version__ = "0.1.0"
