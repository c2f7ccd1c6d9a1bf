def count_pumps_and_valves(en):
    return en.getLinkPumpCount() + en.getLinkValveCount()

result = count_pumps_and_valves(en)
