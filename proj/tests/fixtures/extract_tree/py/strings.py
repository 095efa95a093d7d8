s = '# not'
t = "# nope"  # yes
