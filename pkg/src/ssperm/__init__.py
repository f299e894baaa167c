"""Three-party secret-shared machine learning with permuted non-linearities."""
