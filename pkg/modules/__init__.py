# modules package: words, subgroups, quotients and dynamics
