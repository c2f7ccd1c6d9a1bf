def total_pipe_length(en):
    return float(sum(en.getLinkLength(i) for i in en.getLinkPipeIndex()))

result = total_pipe_length(en)
