def pipe_diameter(en):
    return float(en.getLinkDiameter(en.getLinkIndex("111")))

result = pipe_diameter(en)
