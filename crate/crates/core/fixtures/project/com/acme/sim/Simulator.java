package com.acme.sim;

import com.acme.util.Helper;
import java.util.ArrayList;
import java.util.List;

public class Simulator {
    private World world;
    private final List<Reaction> fired = new ArrayList<>();

    public void update(String key) {
        world.advance();
        Reaction reaction = world.getReaction(key);
        if (reaction == null) {
            return;
        }
        if (reaction.willReact()) {
            fired.add(reaction);
        }
    }

    public void drain(Observer observer) {
        int count = 0;
        for (Reaction r : fired) {
            String label = r.getName();
            r.react(observer);
            count = Helper.clamp(count + 1, label.length());
        }
        fired.clear();
        System.out.println(count);
    }

    public int size() {
        return fired.size();
    }
}
