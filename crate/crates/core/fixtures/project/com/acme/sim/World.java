package com.acme.sim;

import com.acme.util.Registry;

public class World {
    private Registry registry;
    private int tick;

    public Reaction getReaction(String name) {
        Reaction found = registry.lookup(name);
        return found;
    }

    public void advance() {
        tick = tick + 1;
        registry.size();
    }
}

class WorldStats {
    long reactions;

    void record(Reaction reaction) {
        reactions++;
    }
}
