import lorasub
