"""Forward noising, score-matching objectives, training and reverse-SDE sampling."""
