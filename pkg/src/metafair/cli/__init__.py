"""CLI module - The metafair command and its SVG plotter."""
