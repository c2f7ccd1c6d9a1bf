def count_pumps(en):
    return en.getLinkPumpCount()

result = count_pumps(en)
