"""RIS-aided unified near-field / far-field localization."""
