def pipe_length(en):
    return float(en.getLinkLength(en.getLinkIndex("10")))

result = pipe_length(en)
