"""Joint unimodular ISAC waveform / radar receive filter design."""
