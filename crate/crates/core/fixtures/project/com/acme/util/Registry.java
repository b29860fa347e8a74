package com.acme.util;

import com.acme.sim.Reaction;
import java.util.HashMap;
import java.util.Map;

public class Registry {
    private final Map<String, Reaction> entries = new HashMap<>();

    public Reaction lookup(String name) {
        return entries.get(name);
    }

    public void register(Reaction reaction) {
        entries.put(reaction.getName(), reaction);
    }

    public int size() {
        return entries.size();
    }

    public static int count(Registry registry) {
        int total = 0;
        if (registry != null) {
            total = registry.size();
        }
        return total;
    }
}
