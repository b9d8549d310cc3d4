"""
Siamese CNN+LSTM Semantic Textual Similarity

Scores how close two sentences are in meaning. Each word is represented by
its pre-trained embedding joined with a local context computed by a
windowed convolution; a shared LSTM encodes both sentences and the
similarity is the exponentiated negative Manhattan distance between them.
"""

__version__ = "0.1.0"
