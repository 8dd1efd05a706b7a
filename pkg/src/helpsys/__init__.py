"""Help-query engine: detect "how do I ..." questions and retrieve canned answers.

The package is organized as a pipeline:

    textnorm    raw text -> fixed-length token sequences
    embeddings  tokens -> vectors, with letter-trigram hashing for unseen words
    nnet        numpy layers (conv, LSTM, dense) with exact analytic gradients
    models      the four classifier architectures, training loop, checkpoints
    retrieval   KD-tree nearest-neighbour lookup of cached help queries
    pos_mapper  lexicon-driven action/skill baseline
    datagen     synthetic labeled query generator
    harness     dataset splits, model comparison, threshold sweeps, config
    cli         command-line frontend
    service     HTTP facade
"""

__version__ = "0.1.0"
